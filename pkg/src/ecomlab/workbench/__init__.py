"""Configuration, record store, stage runner and command line."""
