"""ringqed: cavity-enhanced divacancy emission and spin readout, simulated and fitted."""

__version__ = "0.1.0"
