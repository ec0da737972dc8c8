"""Smart roadside infrastructure simulator: coded I2I transfer, passive I2V
broadcast, cluster task dispatch and per-node DL scheduling."""

__version__ = "0.1.0"
