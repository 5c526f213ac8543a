from vulnscan.trainer.flops import CONVENTION, REFERENCE_LENGTH, FlopsReport, count_flops
from vulnscan.trainer.loop import LogEntry, Optimizer, TrainConfig, TrainingError, pretrain_mlm, train
from vulnscan.trainer.metrics import ConfigMismatchError, Metrics, evaluate, metrics_from_predictions
from vulnscan.trainer.optim import Adam, Sgd, clip_grad_norm
from vulnscan.trainer.report import COLUMNS, Report, Row, table_report
