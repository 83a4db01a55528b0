# Config module - Settings, hyper-parameters, config files
