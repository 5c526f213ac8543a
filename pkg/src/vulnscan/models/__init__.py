from vulnscan.models.checkpoint import Checkpoint, CheckpointError
from vulnscan.models.config import (
    DISPLAY_NAMES,
    HEAD_OF,
    N_CLASSES,
    PRESETS,
    Head,
    ModelConfig,
    Variant,
    init_params,
    preset,
    with_variant,
)
from vulnscan.models.layers import (
    attention,
    bert_encode,
    bidirectional_final,
    chain_segments,
    choose_masked,
    classifier_logits,
    embed,
    encode_segments,
    feed_forward,
    lstm_states,
    lstm_step,
    mlm_loss,
    rnn_final,
    transformer_block,
)
from vulnscan.models.pipeline import (
    Prediction,
    bert_features,
    bilstm_classify,
    classify,
    forward_logits,
    lstm_classify,
    predict,
    predict_sequence,
    prediction_from_logits,
)
