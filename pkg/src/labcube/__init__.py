"""labcube: unified management for containerized mobile-network lab stacks.

A controller service that validates, renders, deploys, monitors, and tears
down stacks of containerized mobile-network services across a controller
host and delegated RAN hosts.
"""

__version__ = "0.1.0"
