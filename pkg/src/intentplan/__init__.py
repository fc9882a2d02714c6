"""Intention-aware motion planning: prediction, collision bounds, and replanning."""

__version__ = "0.1.0"

from .geometry import (
    GaussianSphere,
    KinematicChain,
    Link,
    Sphere,
    check_confidence,
    collision_bound,
    forward_kinematics,
    human_spheres,
    mc_collision_oracle,
    robot_spheres,
)
from .gp import NoisyInputParams, SparseGpModel, spgp_predict, spgp_predict_noisy, spgp_train
from .classify import ImportVectorClassifier, IvmParams, ivm_classify, ivm_train
from .dtw import DtwKernelParams, dtw_distance, dtw_kernel
from .metrics import eval_prediction, jerkiness, mhd, smoothness
from .motion import (
    FeatureSequence,
    LabeledDemonstration,
    MotionDatabase,
    MotionSequence,
    ReachConfig,
    TrainingWindow,
    compute_features,
    extract_windows,
    inject_noise,
    load_database,
    save_database,
    synth_reach_dataset,
    time_scale,
)
from .planner import (
    CostWeights,
    PlanContext,
    RecedingHorizonPlanner,
    TrajectoryMatrix,
    frame_collision_probability,
    insert_wait,
    multi_start_plan,
    optimize_trajectory,
    straight_line_trajectory,
    trajectory_cost,
)
from .predict import (
    MotionPrediction,
    PredictorBundle,
    PredictorConfig,
    load_predictor,
    predict_motion,
    save_predictor,
    train_predictor,
)
from .simulate import Metrics, RunTrace, Scenario, load_scenario, metrics_report, run_scenario
from .task import (
    HistogramTable,
    ProgressState,
    QTable,
    RewardSpec,
    TaskSpec,
    best_action,
    build_histograms,
    next_action_dist,
    q_learn,
    q_update,
    reward_prep,
    total_reward,
)
