"""Strategy-conditioned reinforcement learning agents for text-described gridworlds."""
