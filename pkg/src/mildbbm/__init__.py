"""Monte Carlo laboratory for branching Brownian motion among mild Poissonian obstacles."""
__version__ = "0.1.0"
