"""Exact (discretisation-free) simulation of one-dimensional diffusion
bridges by splicing unconditioned paths at their confluence, with a
path-space rejection sampler for unconditioned diffusions, a discretised
baseline for bias comparison, and a benchmark command line."""

from .brownian import (BridgeSegment, FptOutcome, PathGrid, bb_sample_at,
                       bessel3_bridge_at, conditioned_pair_at,
                       diff_sum_variance, fpt_zero, no_cross_prob,
                       pre_crossing_pair_at)
from .cdb import (ChainState, ConfluentProposal, aux_crossing, mh_update,
                  propose_confluent, run_cdb, switch_heuristic)
from .coins import (RegimeCoinInput, p_A_cross_prob, p_hat_eps, polar_reparam,
                    toss_regime_coin)
from .models import (DiffusionSpec, RawSde, brownian_spec, lamperti,
                     langevin_t_spec, phi, validate_assumptions)
from .psrs import (Skeleton, psrs_segment, psrs_unconditioned, reveal_at,
                   sample_biased_endpoint)
from .rng import (RngStream, sample_inverse_gaussian, sample_normal,
                  sample_poisson_times, sample_uniform, toss_p_coin)
from .sdb import GridPath, euler_path, run_sdb, sdb_mh_update, sdb_propose

__version__ = "1.0.0"
