"""Day-ahead thermal-load forecasting by online aggregation of regression experts."""

__version__ = "0.1.0"
