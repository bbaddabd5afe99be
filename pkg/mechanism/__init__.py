# Package marker for mechanism