"""extra_lab: a laboratory for decentralized consensus optimization.

Simulates the EXTRA algorithm (in three equivalent formulations) and a
DGD baseline over undirected agent networks, validates mixing matrices
and their spectral contraction properties, classifies stationary points
of non-convex finite sums, and reproduces saddle-avoidance experiments
with a deterministic, seedable harness.
"""

from .analysis import (
    CesaroRates,
    Lemma4Certificate,
    RateSummary,
    StationarityVerdict,
    avg_gradient_norm,
    cesaro_rates,
    classify_point,
    consensus_error,
    lemma4_certificate,
    step_bound_thm1,
    step_bound_thm2,
    t_map_jacobian,
)
from .mixing import (
    MixingPair,
    SpectralInfo,
    build_P,
    lazify,
    make_mixing_pair,
    metropolis_weights,
    spectral_radius,
)
from .netgraph import (
    NetworkGraph,
    circulant_regular_graph,
    complete_graph,
    is_connected,
    ring_graph,
)
from .objectives import (
    BilinearLogisticData,
    ObjectiveSet,
    generate_bilinear_logistic,
    identical_quartic,
    quadratic_objectives,
)
from .records import MetricSample, RunRecord
from .solvers import (
    ConstantStep,
    DgdState,
    DiminishingStep,
    ExtraState,
    dgd_step,
    extra_init,
    extra_step,
    make_local_agents,
    neighbor_view_step,
    run,
    run_local_rounds,
)

__version__ = "0.1.0"
