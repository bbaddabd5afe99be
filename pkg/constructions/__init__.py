# Package marker for constructions