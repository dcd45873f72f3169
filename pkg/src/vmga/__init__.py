"""GA-based VM placement laboratory."""
