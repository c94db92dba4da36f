"""Monte Carlo simulation and analysis of continuous adaptive phase estimation
on narrowband squeezed beams."""

__version__ = "0.1.0"
