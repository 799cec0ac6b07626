"""
Core orchestration and command registry modules.
"""
