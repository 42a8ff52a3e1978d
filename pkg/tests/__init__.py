"""
Test suite for the resource-management simulator.
A package so test modules can share helpers from tests.conftest.
"""
