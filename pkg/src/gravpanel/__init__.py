"""Panel gravity-model toolkit for bilateral trade and FDI."""
__version__ = "0.1.0"
