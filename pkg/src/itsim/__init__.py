"""Ion transport through an RF junction: pseudopotential, noise heating, transport, thermometry, coherence."""

__version__ = "0.1.0"
