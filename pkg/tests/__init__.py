# Marks tests as a package for unittest discovery.
