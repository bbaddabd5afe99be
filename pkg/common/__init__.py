# Package marker for common