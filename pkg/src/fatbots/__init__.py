"""Fat-robot pattern formation simulator."""
