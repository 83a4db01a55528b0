# Utils module - Image I/O and heat-map export
