"""Index pairings for torus actions on truncated C*-algebras."""
