# Core module - Logger, errors, alphabets and the shared module base class
