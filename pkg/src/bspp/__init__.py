"""Spatial point-process models of base-station deployments."""
