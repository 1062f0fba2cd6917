"""Relapse-intervention platform: geofenced risk zones, hourly relapse
prediction, personalized diversion notifications, recovery statistics and a
support community, all behind a single self-hostable HTTP service."""

__version__ = "0.1.0"
