from .config import Condition, ExperimentConfig, derive_seed, expand_grid, load_config
from .report import REPORT_KINDS, load_records, report
from .runner import CSV_COLUMNS, RunRecord, method_names, run, run_condition
