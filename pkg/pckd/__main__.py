from pckd.main import main

main()
