"""LBP and Three-Patch LBP descriptors in the spatial pyramid domain.

Code images are histogrammed over a spatial pyramid, compared with the
histogram intersection kernel, optionally combined across descriptors, and
classified with a one-vs-rest SVM on the precomputed kernel.
"""

__version__ = "0.1.0"

from .classifier import SvmConfig, SvmModel, decide, train  # noqa: E402
from .descriptors import (  # noqa: E402
    CodeImage, LbpConfig, TplbpConfig, lbp_code_image, patch_distance, tplbp_code_image)
from .imageio import DatasetIndex, SplitSpec, load_gray, make_split, scan_dataset  # noqa: E402
from .kernels import (  # noqa: E402
    CombineConfig, GramMatrix, combined_kernel, gram, intersection, spm_kernel)
from .pipeline import EvalReport, PipelineConfig, evaluate, represent  # noqa: E402
from .pyramid import (  # noqa: E402
    PyramidConfig, PyramidHistogram, build_pyramid, grid_bounds, level_weight)
