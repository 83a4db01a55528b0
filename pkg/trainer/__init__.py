# Trainer module - Optimisation, evaluation, checkpoints
