# Package marker for harness