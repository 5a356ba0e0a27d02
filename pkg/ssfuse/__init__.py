from ssfuse.tensor import Tensor, add, map_unary, matmul, mul, scale
from ssfuse.ssm import (
    SelectiveParams,
    SsmWeights,
    apply_kernel,
    discretize,
    kernel_lti,
    project_selective,
    scan_recurrent,
)
from ssfuse.layout import FeatureMap, ScanOrder, fold, reverse, unfold
from ssfuse.blocks import (
    BranchWeights,
    FfPaths,
    FfWeights,
    FusedOutput,
    FusionBlockWeights,
    cp_ssm,
    ff_ssm,
    init_weights,
    ms2fusion,
    sp_ssm,
)
