"""Shared pytest fixtures; also puts this directory on sys.path so test
modules can import helpers."""
