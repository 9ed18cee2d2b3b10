"""Physics baseline following IEC 61400-12-1."""
