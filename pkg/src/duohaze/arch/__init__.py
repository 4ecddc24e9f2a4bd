from .attention import CALayer, EnhancingBlock, FeatureAttentionBlock, PALayer, RCAB
from .cdf import CdfBranch
from .decoder import PixelShuffleUp, TransferBranch
from .fusion import FUSION_TAIL_VARIANTS, FusionTail
from .model import (
    ENCODER_STRIDE,
    LoadReport,
    ModelConfig,
    TwoBranchDehazer,
    count_parameters,
    load_parameter_store,
    load_pretrained_encoder,
    pad_to_stride,
    save_parameter_store,
    tiny_model_config,
)
from .res2net import ENCODERS, Bottle2neck, Res2NetEncoder, build_encoder

__all__ = [
    "CALayer",
    "PALayer",
    "RCAB",
    "FeatureAttentionBlock",
    "EnhancingBlock",
    "CdfBranch",
    "TransferBranch",
    "PixelShuffleUp",
    "FusionTail",
    "FUSION_TAIL_VARIANTS",
    "ModelConfig",
    "TwoBranchDehazer",
    "ENCODER_STRIDE",
    "LoadReport",
    "count_parameters",
    "load_pretrained_encoder",
    "load_parameter_store",
    "save_parameter_store",
    "pad_to_stride",
    "tiny_model_config",
    "Res2NetEncoder",
    "Bottle2neck",
    "ENCODERS",
    "build_encoder",
]
