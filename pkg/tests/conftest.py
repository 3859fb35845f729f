import os


# Set before the package creates its tracers and loggers
os.environ.setdefault("POWERTOOLS_TRACE_DISABLED", "true")
os.environ.setdefault("POWERTOOLS_SERVICE_NAME", "exits")
os.environ.setdefault("LOG_LEVEL", "WARNING")
