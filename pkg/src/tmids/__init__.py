"""Tsetlin Machine intrusion detection for IoMT network flows."""
