# LDP Core Package
# Locally differentially private core decomposition and densest subgraph simulator
