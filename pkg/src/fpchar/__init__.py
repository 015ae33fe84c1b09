"""Black-box characterization of non-IEEE floating-point arithmetic.

The package simulates GPU-style adders and multipliers bit for bit and runs
probes that recover their parameters from input/output pairs alone.
"""

__version__ = "0.1.0"
