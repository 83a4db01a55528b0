# Losses module - Matching, detection, CTC and the combined objective
