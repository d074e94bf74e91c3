"""Command-line front end for padic-cf."""
