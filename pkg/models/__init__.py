# Models module - Primitives, layers, I2C / C2W and the full recognizer
