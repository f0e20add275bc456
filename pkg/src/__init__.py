"""
This module contains the taxelsim package.
"""
