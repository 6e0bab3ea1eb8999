"""Constrained transient-stability certification for droop-controlled inverter networks."""
