# Package marker for equilibria