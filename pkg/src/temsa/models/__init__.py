"""Classifier models: numpy attention reference, the BiLSTM text classifier,
dense classification heads, frozen image backbones, the pretrained text
encoder adapter, and the shared training loop."""

from .attention import (
    AttentionTensors,
    EncoderBlockParams,
    encoder_block,
    gelu,
    layer_norm,
    multi_head_attention,
    relu,
    self_attention,
    self_attention_detail,
    softmax,
)
from .bilstm import BiLstmClassifier, BiLstmConfig
from .heads import ClassifyHead, HeadConfig
from .image import (
    IMAGE_BACKBONES,
    IMAGE_SIZE,
    ImageClassifier,
    build_backbone,
    image_augment,
)
from .encoder import (
    EncoderClassifier,
    TextEncoderAdapter,
    WordpieceTokenizerAdapter,
    block_params_from_torch,
)
from .training import (
    LR_BILSTM,
    LR_ENCODER,
    LR_IMAGE,
    TrainConfig,
    load_checkpoint,
    one_hot,
    predict,
    predict_proba,
    save_checkpoint,
    train,
)

__all__ = [
    "AttentionTensors",
    "EncoderBlockParams",
    "encoder_block",
    "gelu",
    "layer_norm",
    "multi_head_attention",
    "relu",
    "self_attention",
    "self_attention_detail",
    "softmax",
    "BiLstmClassifier",
    "BiLstmConfig",
    "ClassifyHead",
    "HeadConfig",
    "IMAGE_BACKBONES",
    "IMAGE_SIZE",
    "ImageClassifier",
    "build_backbone",
    "image_augment",
    "EncoderClassifier",
    "TextEncoderAdapter",
    "WordpieceTokenizerAdapter",
    "block_params_from_torch",
    "LR_BILSTM",
    "LR_ENCODER",
    "LR_IMAGE",
    "TrainConfig",
    "load_checkpoint",
    "one_hot",
    "predict",
    "predict_proba",
    "save_checkpoint",
    "train",
]
