"""leapson: density-sensitive clustering via leapfrog distances,
spectral re-embedding, and sum-of-norms clustering."""

from .bounds import (
    ConcentrationProbe,
    Density1D,
    GaussianMixtureDensity,
    LambdaRange,
    RecoveryCertificate,
    UniformIntervalsDensity,
    certificate,
    expected_lf,
    lf_concentration_probe,
    recovery_range_1d,
)
from .datagen import (
    IntervalSet,
    LabeledDataset,
    MixtureSpec,
    gen_aniso_blobs,
    gen_circles,
    gen_gaussian_mixture,
    gen_moons,
    gen_uniform_intervals,
)
from .errors import InputError, SolverError
from .evaluation import (
    DbscanParams,
    KMeansParams,
    SingleLinkageParams,
    dbscan,
    kmeans,
    rand_index,
    single_linkage,
)
from .leapfrog import lf_1d_closed_form, lf_all_pairs, lf_from_source
from .mds import (
    EigengapRatio,
    EigenSpectrum,
    Embedding,
    Fixed,
    eig_sym,
    embed,
    embed_distance_matrix,
    gram_from_lf,
    select_dim,
)
from .pipeline import PipelineConfig, RunReport, ingest_csv, run_pipeline, run_table1
from .son import (
    ClusterAssignment,
    GridSpec,
    SonParams,
    SonSolution,
    extract_clusters,
    lambda_grid_search,
    lambda_max,
    solve_son,
)

__version__ = "0.1.0"
