"""Built-in scenario configurations for the simulator and CLI."""

from __future__ import annotations

import copy

import numpy as np

# Robot: 3-joint arm on a table, base at the origin. Link 1 is a vertical yaw
# column; links 2 and 3 pitch. The end effector sweeps an arc of radius ~0.58 m
# at z ~ 0.15 m across the table.
_ARM = {
    "base": [0.0, 0.0, 0.0],
    "links": [
        {"offset": [0.0, 0.0, 0.3], "axis": [0, 0, 1], "limits": [-3.1, 3.1],
         "spheres": [[0.5, 0.06]]},
        {"offset": [0.3, 0.0, 0.0], "axis": [0, 1, 0], "limits": [-2.4, 2.4],
         "spheres": [[0.4, 0.06], [0.9, 0.06]]},
        {"offset": [0.3, 0.0, 0.0], "axis": [0, 1, 0], "limits": [-2.4, 2.4],
         "spheres": [[0.4, 0.05], [0.9, 0.05]]},
    ],
}

# Human seated across the table at x ~ 1.0, facing the robot; right arm reaches
# toward targets on the robot's sweep path.
_HUMAN_POSE = [
    [1.05, 0.00, 0.10],   # pelvis
    [1.05, 0.00, 0.35],   # torso
    [1.05, 0.00, 0.50],   # neck
    [1.05, 0.00, 0.62],   # head
    [1.00, 0.18, 0.45],   # left_shoulder
    [0.95, 0.26, 0.30],   # left_elbow
    [0.90, 0.30, 0.18],   # left_hand
    [1.00, -0.18, 0.45],  # right_shoulder
    [0.95, -0.26, 0.30],  # right_elbow
    [0.90, -0.30, 0.18],  # right_hand
]

_TARGETS = [
    [0.50, -0.25, 0.14],
    [0.56, -0.08, 0.14],
    [0.56, 0.08, 0.14],
    [0.50, 0.25, 0.14],
]


def blocking_scenario(
    prediction: str = "noisy",
    delta_cl: float = 0.95,
    speed: float = 0.75,
    noise_sigma: float = 0.0,
    training_seed: int = 0,
    n_starts: int = 2,
) -> dict:
    """Human reaches across the robot's sweep path while it shuttles side to side."""
    return {
        "name": "blocking",
        "training_seed": training_seed,
        "max_time": 30.0,
        "robot": {
            "chain": copy.deepcopy(_ARM),
            "home": [-1.15, 0.2, 0.1],
            "policy": "in_order",
            "subtasks": [
                {"name": "deliver_right", "goal": [1.15, 0.2, 0.1]},
                {"name": "deliver_left", "goal": [-1.15, 0.2, 0.1]},
            ],
        },
        "human": {
            "generator": {
                "targets": copy.deepcopy(_TARGETS),
                "repetitions": 16,
                "fps": 10.0,
                "duration": 3.2,
                "phases": [0.15, 0.22, 0.38, 0.18],
                "base_pose": copy.deepcopy(_HUMAN_POSE),
                "arm": [7, 8, 9],
            },
            "playback_repetitions": 3,
            "script": {"traverse_block": {"lead": 0.6}},
            "speed": speed,
            "noise_sigma": noise_sigma,
            "limbs": [[7, 8], [8, 9]],
            "u_samples": 3,
            "sphere_radius": 0.08,
            "hand_joint": 9,
        },
        "task": {
            "human_actions": ["reach_0", "reach_1", "reach_2", "reach_3"],
            "robot_actions": ["deliver_right", "deliver_left"],
            "order": "(1,2)",
            "H": [[1.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.0, 1.0]],
            "nominal_human_s": [4.0, 4.0, 4.0, 4.0],
            "nominal_robot_s": [7.0, 7.0],
            "w_prep": 1.0,
            "w_delay": 1.0,
        },
        "planner": {
            "delta_cl": delta_cl,
            "n_waypoints": 18,
            "replan_s": 0.5,
            "m": 2,
            "n_starts": n_starts,
            "budget": 25,
            "weights": {"smoothness": 1.0, "static": 200.0, "dynamic": 200.0},
            "hinge_margin": 0.8,
        },
        "prediction": {
            "mode": prediction,
            "sigma": max(noise_sigma, 0.03),
            "velocity_limit": 2.5,
            "config": {
                "n_p": 8,
                "n_f": 12,
                "num_pseudo": 40,
                "window_stride": 2,
                "gp_windows_per_class": 90,
                "classifier_windows_per_class": 30,
                "speeds": [0.5, 0.75, 1.0],
            },
        },
    }


def confidence_scenario(delta_cl: float = 0.95, training_seed: int = 0) -> dict:
    """Single traverse against one scripted blocking reach.

    One controlled encounter makes the run's minimum clearance the
    margin-driven squeeze past the settled arm, which is what varies with the
    confidence level.
    """
    cfg = blocking_scenario(prediction="noisy", delta_cl=delta_cl,
                            training_seed=training_seed)
    cfg["name"] = "confidence"
    cfg["robot"]["subtasks"] = [{"name": "deliver_right", "goal": [1.15, 0.2, 0.1]}]
    cfg["task"]["robot_actions"] = ["deliver_right"]
    cfg["task"]["order"] = "(1)"
    cfg["task"]["H"] = [[1.0], [2.0], [1.0], [0.5]]
    cfg["task"]["nominal_robot_s"] = [7.0]
    # the arm settles, with a stable prediction, well before the robot plans
    # its crossing; the squeeze past it is then margin-driven
    cfg["planner"]["n_waypoints"] = 20
    cfg["human"]["generator"]["duration"] = 4.2
    cfg["human"]["generator"]["phases"] = [0.1, 0.18, 0.5, 0.15]
    cfg["max_time"] = 20.0
    return cfg


def narrow_passage_scene(seed_unused: int = 0) -> dict:
    """Static wall with one gap plus an uncertain human arm hovering at the gap.

    Used for direct multi-start planning checks rather than full simulation.
    """
    return {
        "chain": copy.deepcopy(_ARM),
        "q_start": [-0.9, 0.2, 0.1],
        "q_goal": [0.9, 0.2, 0.1],
        "delta_cl": 0.95,
        "static_obstacles": [
            {"center": [0.52, 0.0, 0.02], "radius": 0.09},
            {"center": [0.52, 0.0, 0.42], "radius": 0.09},
            {"center": [0.40, 0.0, 0.55], "radius": 0.09},
        ],
        "human_wall": {
            "means": [[0.56, 0.0, 0.18], [0.50, 0.0, 0.30]],
            "sigma": 0.035,
            "radius": 0.07,
        },
    }


def eval_scenario(noise_sigma: float = 0.0, training_seed: int = 0) -> dict:
    """Prediction-evaluation twin of the blocking scenario (no robot needed)."""
    cfg = blocking_scenario(prediction="noisy", noise_sigma=noise_sigma,
                            training_seed=training_seed)
    cfg["name"] = "prediction-eval"
    return cfg


BUILTIN_SCENARIOS = {
    "blocking": blocking_scenario,
    "prediction-eval": eval_scenario,
}
