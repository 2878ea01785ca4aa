"""Link-level simulation of flexible LED index modulation (FLIM) and its
spatial-modulation baselines over line-of-sight MIMO optical channels."""

from flim.analysis import (
    pairwise_error_probability,
    received_electrical_power,
    snr_per_bit,
    symbol_second_moment,
    union_bound_bep,
)
from flim.channel import channel_matrix, condition_number_db, lambertian_mode, los_gain
from flim.codebook import (
    Codebook,
    activation_pmf,
    assign_labels,
    build_codebook,
    build_universe,
    pam_alphabet,
    select_subset,
    spectral_efficiency,
)
from flim.detect import elementwise_detect, inverse_map, ml_detect, mmse_filter
from flim.geometry import SceneConfig, build_scene, cell_radius, orientation_vector
from flim.sim import SimRun, run_abep, sweep_cn

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "SceneConfig",
    "SimRun",
    "activation_pmf",
    "assign_labels",
    "build_codebook",
    "build_scene",
    "build_universe",
    "cell_radius",
    "channel_matrix",
    "condition_number_db",
    "elementwise_detect",
    "inverse_map",
    "lambertian_mode",
    "los_gain",
    "ml_detect",
    "mmse_filter",
    "orientation_vector",
    "pairwise_error_probability",
    "pam_alphabet",
    "received_electrical_power",
    "run_abep",
    "select_subset",
    "snr_per_bit",
    "spectral_efficiency",
    "sweep_cn",
    "symbol_second_moment",
    "union_bound_bep",
]
