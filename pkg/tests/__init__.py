"""Tests for oheckman."""
