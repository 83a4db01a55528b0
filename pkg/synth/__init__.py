# Synth module - Bitmap glyphs, degradations, dataset generation
