# CLI module - Dataset generation, training, evaluation, recognition
