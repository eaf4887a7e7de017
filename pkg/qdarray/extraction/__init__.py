"""Per-dot extraction: threshold fits, barrier maps, Coulomb diamonds and spurious dots."""
