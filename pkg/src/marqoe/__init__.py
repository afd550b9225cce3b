"""QoE-aware bandwidth provisioning for edge-assisted mobile AR.

Trace-driven simulation of pose prediction and frustum visibility, a
hit-rate QoE metric, uplink queueing, donor/receiver spectrum
reallocation, and a schema-described tool service exposing the
prediction/query functions.
"""

from .allocate import (AllocationParams, AllocationResult, Violation,
                       check_feasibility, donor_reduced_bandwidth, objective,
                       reallocate)
from .errors import MarqoeError
from .experiment import (ExperimentConfig, ExperimentReport, emit_report,
                         load_config, run_experiment)
from .geometry import (CellGrid, Frustum, Pose, canonicalize_pose, vchr,
                       visible_cells)
from .metrics import category_accuracy, qoe_mse
from .network import (ChannelConfig, LinkState, QueueParams, ServiceMoments,
                      link_state, max_sampling_rate, min_bandwidth_for_rate,
                      queue_delay, service_moments, uplink_rate)
from .predict import (KalmanParams, KalmanState, PipelineConfig,
                      PredictorConfig, QoEEstimate, kalman_fixed_point,
                      kalman_update, predict_future_qoe, predict_pose_base,
                      predict_pose_corrected, realized_qoe)
from .trace import (DatasetManifest, FrameRecord, PoseHistory, UserTrace,
                    load_manifest, parse_trace_file, resample_history,
                    write_trace_csv)
from .ucr import HistoryEntry, UserContextRecord, UserContextStore, query_history

__version__ = "0.1.0"
