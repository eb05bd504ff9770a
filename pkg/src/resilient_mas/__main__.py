from resilient_mas.cli import main
main()
