"""Synchronization stability of delay-coupled networks at large delay."""
