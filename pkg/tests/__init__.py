"""Unit test package for oocutv."""
