"""Subcommands of the oocutv command line."""
