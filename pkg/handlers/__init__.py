# Command-line dispatch
