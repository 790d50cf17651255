"""adaptgap - exact adaptivity-gap oracles for influence maximization."""
