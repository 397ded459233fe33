# Computational core: measures, features, Bellman errors, bounds, mixing
