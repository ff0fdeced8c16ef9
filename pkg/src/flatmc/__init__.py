"""flatmc: existential model checking of Past LTL with counter constraints
over flat counter systems, with verifiable witnesses."""

__version__ = "0.1.0"
