"""Heat-trace asymptotics for elliptic cone differential operators."""

__version__ = "0.1.0"
