"""Possibilistic ensemble Kalman filter: max-det fit, filters and experiments."""

from ._core import *  # noqa: F401,F403
