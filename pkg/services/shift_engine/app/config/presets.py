"""
Default parameters per setting and the two figure presets.

The figure presets pin every value a figure run needs (γ, particle
count, seed, initial law); all of them are echoed into manifest.json.
"""

SETTING_DEFAULTS = {
    "regression": {
        "gamma": 0.1,
        "learner_eta": 0.5,
        "initial_law": "ambient",
    },
    "classification": {
        "gamma": 0.25,
        "learner_eta": 1.0,
        "initial_law": "subspace",
    },
}

FIGURE_PRESETS = {
    "fig1": {
        "setting": "regression",
        "d": 200,
        "subspace_rank": 100,
        "theta_star_rule": "harmonic",
        "gamma": 0.5,
        "n_particles": 100,
        "T": 40,
        "snapshots": [0, 5, 10, 15, 20, 25, 30, 35, 40],
        "seed": 2024,
    },
    "fig2": {
        "setting": "classification",
        "d": 200,
        "subspace_rank": 100,
        "theta_star_rule": "harmonic",
        "gamma": 0.25,
        "n_particles": 100,
        "T": 200,
        "snapshots": [0, 25, 50, 75, 100, 125, 150, 175, 200],
        "seed": 2024,
    },
}

# Snapshot count used when neither snapshots nor record_every is configured.
DEFAULT_SNAPSHOT_BLOCKS = 8

# Record times for classification rate fits are spread geometrically.
RATE_SCHEDULE_POINTS = 200
