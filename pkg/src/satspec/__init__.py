"""
Simulation of strongly saturated cavity-enhanced spectroscopy of ultra-narrow
optical transitions: optical bistability, stability, lock budget and locked-laser
lineshape.
"""
import logging

from os import environ
from rich.console import Console
from rich.logging import RichHandler

VERSION = "0.4.0"

# Console logger is for displaying updates to user - normal
# events.
console = Console(emoji=False, log_path=False, stderr=True)
clog = console.log

# Create application logger (for when things go wrong)
log = logging.getLogger("satspec")
log.setLevel(environ.get("SATSPEC_LOG_LEVEL", environ.get("LOG_LEVEL", "WARN")).upper())

if environ.get("LOG_FILE"):
    logging.basicConfig(filename=environ["LOG_FILE"], filemode="a")
else:
    handler = RichHandler(console=console, show_path=False)
    handler.setFormatter(logging.Formatter("satspec: %(message)s"))
    log.addHandler(handler)


class SatspecException(Exception):
    """
    Base class for all errors raised deliberately by this package.
    """

    exit_code = 1


class ConfigException(SatspecException):
    """
    Invalid parameters, unknown species, malformed config files or grids.
    """

    exit_code = 2


class NumericalException(SatspecException):
    """
    A numerical procedure (integrator, fit, fixed-point check) could not deliver a result.
    """

    exit_code = 3
