# Simulators: Mountain Car variants and finite Markov reward processes
