"""This module contains tests for the CLI methods."""
